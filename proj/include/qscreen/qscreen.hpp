// Copyright 2026 The qscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qscreen/annealer.hpp"
#include "qscreen/bitvec.hpp"
#include "qscreen/dataset.hpp"
#include "qscreen/digest.hpp"
#include "qscreen/error.hpp"
#include "qscreen/fingerprint.hpp"
#include "qscreen/format.hpp"
#include "qscreen/gbdt.hpp"
#include "qscreen/importance.hpp"
#include "qscreen/parallel.hpp"
#include "qscreen/pipeline.hpp"
#include "qscreen/qubo.hpp"
#include "qscreen/random.hpp"
#include "qscreen/screening.hpp"
#include "qscreen/sgd.hpp"
#include "qscreen/smiles.hpp"
