#pragma once

#include "hpgan/autodiff.hpp"
#include "hpgan/common.hpp"
#include "hpgan/losses.hpp"
#include "hpgan/models.hpp"
#include "hpgan/skeleton.hpp"
#include "hpgan/svg.hpp"
#include "hpgan/tensor.hpp"
#include "hpgan/trainer.hpp"
