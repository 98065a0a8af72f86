// Copyright 2026 The keldysh-map Authors
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

#include <complex>
#include <vector>

namespace keldysh::detail {

// In-place unnormalized backward DFT (exp(+2 pi i j k / n)) of `howmany`
// interleaved series: element e of sample j lives at data[j * howmany + e].
void backward_dft_interleaved(std::vector<std::complex<double>>& data, int n, int howmany);

}  // namespace keldysh::detail
