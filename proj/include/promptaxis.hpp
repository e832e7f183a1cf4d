// Copyright 2026 The promptaxis Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "promptaxis/axis.hpp"
#include "promptaxis/backend.hpp"
#include "promptaxis/detection.hpp"
#include "promptaxis/error.hpp"
#include "promptaxis/eval.hpp"
#include "promptaxis/ledger.hpp"
#include "promptaxis/mock_backend.hpp"
#include "promptaxis/pipeline.hpp"
#include "promptaxis/plan.hpp"
#include "promptaxis/remote_backend.hpp"
#include "promptaxis/report.hpp"
#include "promptaxis/translate.hpp"
