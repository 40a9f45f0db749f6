#pragma once

#include "adsq/bstep.hpp"
#include "adsq/codes.hpp"
#include "adsq/data_model.hpp"
#include "adsq/encoder.hpp"
#include "adsq/errors.hpp"
#include "adsq/imgnet.hpp"
#include "adsq/labelnet.hpp"
#include "adsq/metrics.hpp"
#include "adsq/numerics.hpp"
#include "adsq/synth.hpp"
#include "adsq/trainer.hpp"
