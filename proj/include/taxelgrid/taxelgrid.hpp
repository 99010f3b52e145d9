#pragma once

#include "taxelgrid/error.hpp"
#include "taxelgrid/random.hpp"
#include "taxelgrid/sensor_image.hpp"
#include "taxelgrid/dataset.hpp"
#include "taxelgrid/json_envelope.hpp"
#include "taxelgrid/nn/spec.hpp"
#include "taxelgrid/nn/model.hpp"
#include "taxelgrid/nn/train.hpp"
#include "taxelgrid/nn/gradcheck.hpp"
#include "taxelgrid/nn/serialize.hpp"
#include "taxelgrid/baselines.hpp"
#include "taxelgrid/eval.hpp"
