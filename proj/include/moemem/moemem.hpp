// Copyright 2026 The moemem Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "moemem/activation.hpp"
#include "moemem/arch.hpp"
#include "moemem/dtype.hpp"
#include "moemem/error.hpp"
#include "moemem/oracle.hpp"
#include "moemem/parallel.hpp"
#include "moemem/params.hpp"
#include "moemem/planner.hpp"
#include "moemem/rational.hpp"
#include "moemem/report.hpp"
#include "moemem/tables.hpp"
#include "moemem/units.hpp"
#include "moemem/zero.hpp"
