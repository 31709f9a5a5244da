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
#include <cstdio>

#include "jdcochlea.hpp"

using namespace jdcochlea;

int main(int argc, char** argv) {
  PhysicalConstants c;
  c.elements = argc > 1 ? std::atoi(argv[1]) : 500;
  const auto model = make_active_model(c);
  const auto grid = default_stability_grid();
  for (const auto& r : stability_sweep(grid, model))
    std::printf("%6.0f kHz  %.4f  %s\n", r.fs / 1000, r.max_eig_magnitude,
                r.stable ? "stable" : "unstable");
}
