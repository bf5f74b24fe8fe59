#pragma once

#include "latent_ransac/bench.hpp"
#include "latent_ransac/embedding.hpp"
#include "latent_ransac/errors.hpp"
#include "latent_ransac/estimator.hpp"
#include "latent_ransac/geometry.hpp"
#include "latent_ransac/io.hpp"
#include "latent_ransac/random_grid.hpp"
#include "latent_ransac/solvers.hpp"
#include "latent_ransac/stopping.hpp"
#include "latent_ransac/synth.hpp"
