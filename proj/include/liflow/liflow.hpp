#pragma once

#include "liflow/point_cloud.hpp"
#include "liflow/kdtree.hpp"
#include "liflow/geometry.hpp"
#include "liflow/coupling.hpp"
#include "liflow/objective.hpp"
#include "liflow/field.hpp"
#include "liflow/sampler.hpp"
#include "liflow/metrics.hpp"
#include "liflow/scenes.hpp"
#include "liflow/cloud_io.hpp"
#include "liflow/checkpoint.hpp"
#include "liflow/train.hpp"
#include "liflow/config.hpp"
#include "liflow/dataset.hpp"
#include "liflow/commands.hpp"
