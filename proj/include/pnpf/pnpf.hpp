#pragma once

// Umbrella header for the finite-volume PNPF library.

#include "pnpf/config.hpp"
#include "pnpf/diagnostics.hpp"
#include "pnpf/dual.hpp"
#include "pnpf/error.hpp"
#include "pnpf/experiments.hpp"
#include "pnpf/linsys.hpp"
#include "pnpf/mesh.hpp"
#include "pnpf/mms.hpp"
#include "pnpf/model.hpp"
#include "pnpf/newton.hpp"
#include "pnpf/nondim.hpp"
#include "pnpf/operators.hpp"
#include "pnpf/scheme1.hpp"
#include "pnpf/scheme2.hpp"
