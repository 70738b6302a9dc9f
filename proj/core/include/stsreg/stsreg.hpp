#pragma once

#include "stsreg/checkpoint.hpp"
#include "stsreg/data.hpp"
#include "stsreg/encoder.hpp"
#include "stsreg/error.hpp"
#include "stsreg/eval.hpp"
#include "stsreg/gradcheck.hpp"
#include "stsreg/label_map.hpp"
#include "stsreg/losses.hpp"
#include "stsreg/synthetic.hpp"
#include "stsreg/tensor.hpp"
#include "stsreg/training.hpp"
