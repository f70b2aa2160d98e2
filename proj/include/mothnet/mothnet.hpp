#pragma once
// Umbrella header.

#include "mothnet/classifiers.hpp"
#include "mothnet/config.hpp"
#include "mothnet/dataset.hpp"
#include "mothnet/experiments.hpp"
#include "mothnet/image_io.hpp"
#include "mothnet/io.hpp"
#include "mothnet/network.hpp"
#include "mothnet/plasticity.hpp"
#include "mothnet/rng.hpp"
#include "mothnet/sde.hpp"
