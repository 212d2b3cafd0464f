// Copyright 2026 The MTPC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Everything, for callers that do not care about compile time.

#ifndef MTPC_MTPC_HPP_
#define MTPC_MTPC_HPP_

#include "mtpc/array_sim.hpp"
#include "mtpc/azimuth.hpp"
#include "mtpc/checkpoint.hpp"
#include "mtpc/commands.hpp"
#include "mtpc/csnn.hpp"
#include "mtpc/encoder.hpp"
#include "mtpc/error.hpp"
#include "mtpc/experiment.hpp"
#include "mtpc/fft.hpp"
#include "mtpc/gcc_phat.hpp"
#include "mtpc/kv_config.hpp"
#include "mtpc/lif.hpp"
#include "mtpc/manifest.hpp"
#include "mtpc/network.hpp"
#include "mtpc/pattern_io.hpp"
#include "mtpc/rsnn.hpp"
#include "mtpc/trainer.hpp"
#include "mtpc/wav.hpp"

#endif  // MTPC_MTPC_HPP_
