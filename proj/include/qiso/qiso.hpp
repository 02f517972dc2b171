#pragma once

// Umbrella header for the library part (the CLI lives in qiso/cli.hpp).

#include "qiso/darboux.hpp"
#include "qiso/error.hpp"
#include "qiso/expression.hpp"
#include "qiso/invariants.hpp"
#include "qiso/ode.hpp"
#include "qiso/potential.hpp"
#include "qiso/serialize.hpp"
#include "qiso/spectrum.hpp"
