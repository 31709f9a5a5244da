// Copyright 2026 The jdcochlea Authors
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

#include "jdcochlea/errors.hpp"
#include "jdcochlea/params.hpp"
#include "jdcochlea/tridiagonal.hpp"
#include "jdcochlea/assembly.hpp"
#include "jdcochlea/solver.hpp"
#include "jdcochlea/stability.hpp"
#include "jdcochlea/reference.hpp"
#include "jdcochlea/stimuli.hpp"
#include "jdcochlea/auditory.hpp"
#include "jdcochlea/io.hpp"
