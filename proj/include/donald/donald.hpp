#pragma once

#include "donald/commands.hpp"
#include "donald/error.hpp"
#include "donald/grid.hpp"
#include "donald/ingest.hpp"
#include "donald/npy.hpp"
#include "donald/pipeline.hpp"
#include "donald/report.hpp"
#include "donald/spectral.hpp"
#include "donald/tensor_field.hpp"
#include "donald/visualize.hpp"
