#pragma once

#include "cat.hpp"
#include "cavity.hpp"
#include "dicke.hpp"
#include "error.hpp"
#include "evolution.hpp"
#include "hybrid.hpp"
#include "integrator.hpp"
#include "open_dynamics.hpp"
#include "qfi.hpp"

namespace cubicspin {

inline constexpr const char* version = "0.1.0";

} // namespace cubicspin
