#pragma once

// Umbrella header for the whole library.

#include "phyloinv/common.hpp"
#include "phyloinv/invariants.hpp"
#include "phyloinv/io.hpp"
#include "phyloinv/linalg.hpp"
#include "phyloinv/membership.hpp"
#include "phyloinv/model.hpp"
#include "phyloinv/poly.hpp"
#include "phyloinv/tensor.hpp"
#include "phyloinv/tree.hpp"
