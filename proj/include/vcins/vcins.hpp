#pragma once

#include "vcins/errors.hpp"
#include "vcins/loss_model.hpp"
#include "vcins/utility.hpp"
#include "vcins/roots.hpp"
#include "vcins/problem.hpp"
#include "vcins/arrow.hpp"
#include "vcins/contract.hpp"
#include "vcins/bounds.hpp"
#include "vcins/solver.hpp"
#include "vcins/oracle.hpp"
#include "vcins/orders.hpp"
#include "vcins/statics.hpp"
#include "vcins/scenario.hpp"
