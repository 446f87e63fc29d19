#pragma once

// Umbrella header.
#include "gazeid/classify.hpp"
#include "gazeid/dataset.hpp"
#include "gazeid/detection.hpp"
#include "gazeid/distributions.hpp"
#include "gazeid/error.hpp"
#include "gazeid/features.hpp"
#include "gazeid/fisher.hpp"
#include "gazeid/grid.hpp"
#include "gazeid/io.hpp"
#include "gazeid/markov.hpp"
#include "gazeid/optimize.hpp"
#include "gazeid/parallel.hpp"
#include "gazeid/protocol.hpp"
#include "gazeid/random.hpp"
#include "gazeid/scenewalk.hpp"
#include "gazeid/simulator.hpp"
#include "gazeid/types.hpp"
