// include/svseval/svseval.hpp

// Copyright 2026 The svseval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "svseval/audio.hpp"
#include "svseval/bsseval.hpp"
#include "svseval/correlation.hpp"
#include "svseval/csv.hpp"
#include "svseval/embedding.hpp"
#include "svseval/error.hpp"
#include "svseval/loudness.hpp"
#include "svseval/pipeline.hpp"
#include "svseval/random.hpp"
#include "svseval/spectral.hpp"
#include "svseval/stft.hpp"
#include "svseval/study.hpp"
