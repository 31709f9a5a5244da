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
#include <cmath>
#include <cstdio>

#include "jdcochlea.hpp"

using namespace jdcochlea;

// Prints where three tones peak along a 500-element cochlea.
int main() {
  PhysicalConstants c;
  c.elements = 500;
  const auto model = make_active_model(c);
  for (double f : {300.0, 3700.0, 15000.0}) {
    const auto tone = make_tone(128000, 0.1, f, 0);
    const auto r = simulate(tone.samples, model);
    const auto profile = steady_state_profile(r, f);
    const auto k = argmax(profile);
    std::printf("%7.0f Hz  peak at %5.2f mm  (%.1f dB)\n", f, r.positions[k] * 1e3,
                20 * std::log10(profile[k]));
  }
}
