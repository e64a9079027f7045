#pragma once

/// Everything: kernel, mesh, assembly, spectral, embedding, hypotheses, solver, pipeline.
#include "fraclap/assembly.hpp"
#include "fraclap/config.hpp"
#include "fraclap/core.hpp"
#include "fraclap/embedding.hpp"
#include "fraclap/hypotheses.hpp"
#include "fraclap/kernel.hpp"
#include "fraclap/mesh.hpp"
#include "fraclap/pipeline.hpp"
#include "fraclap/report.hpp"
#include "fraclap/solver.hpp"
#include "fraclap/spectral.hpp"
