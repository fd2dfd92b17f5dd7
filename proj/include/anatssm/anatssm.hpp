#pragma once

#include "anatssm/error.hpp"
#include "anatssm/shape_core.hpp"
#include "anatssm/obj_io.hpp"
#include "anatssm/alignment.hpp"
#include "anatssm/base_ssm.hpp"
#include "anatssm/ssm_metrics.hpp"
#include "anatssm/geometry_fit.hpp"
#include "anatssm/landmarks.hpp"
#include "anatssm/measurements.hpp"
#include "anatssm/statistics.hpp"
#include "anatssm/population.hpp"
#include "anatssm/mapping.hpp"
#include "anatssm/anat_model.hpp"
#include "anatssm/evaluation.hpp"
#include "anatssm/fixtures.hpp"
#include "anatssm/serialization.hpp"
