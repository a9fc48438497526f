#pragma once

#include <sfhn/errors.hpp>
#include <sfhn/spatial.hpp>
#include <sfhn/implicit.hpp>
#include <sfhn/noise.hpp>
#include <sfhn/model.hpp>
#include <sfhn/solver.hpp>
#include <sfhn/parallel.hpp>
#include <sfhn/attractor_lab.hpp>
#include <sfhn/io.hpp>
#include <sfhn/config.hpp>
#include <sfhn/experiments.hpp>
