#pragma once

#include "lcm/error.hpp"
#include "lcm/ir.hpp"
#include "lcm/acfg.hpp"
#include "lcm/axiom.hpp"
#include "lcm/exec.hpp"
#include "lcm/leakage.hpp"
#include "lcm/repair.hpp"
#include "lcm/dot.hpp"
#include "lcm/corpus.hpp"
