#pragma once

#include "cdds/blockmat.hpp"
#include "cdds/io.hpp"
#include "cdds/kernel.hpp"
#include "cdds/lemmas.hpp"
#include "cdds/lmi.hpp"
#include "cdds/model.hpp"
#include "cdds/sdpa.hpp"
#include "cdds/simulator.hpp"
#include "cdds/solver.hpp"
