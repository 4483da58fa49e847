// Copyright 2026 The triebias Authors. All Rights Reserved.
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

#pragma once

#include "triebias/beam_decoder.hpp"
#include "triebias/bias_list.hpp"
#include "triebias/bias_trie.hpp"
#include "triebias/error.hpp"
#include "triebias/metrics.hpp"
#include "triebias/scorer.hpp"
#include "triebias/table_scorer.hpp"
#include "triebias/token_core.hpp"
#include "triebias/variant_extract.hpp"
