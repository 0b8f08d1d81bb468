#pragma once

#include "se3ds/cli.hpp"
#include "se3ds/dataset.hpp"
#include "se3ds/ds_model.hpp"
#include "se3ds/errors.hpp"
#include "se3ds/evaluation.hpp"
#include "se3ds/io.hpp"
#include "se3ds/manifold.hpp"
#include "se3ds/metrics.hpp"
#include "se3ds/mixture.hpp"
#include "se3ds/quaternion.hpp"
#include "se3ds/random.hpp"
#include "se3ds/rollout.hpp"
#include "se3ds/synthetic.hpp"
