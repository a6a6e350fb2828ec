// Copyright 2026 The WSI Authors.
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

#ifndef WSI_THREADING_HPP_
#define WSI_THREADING_HPP_

#include <cstddef>
#include <functional>

namespace wsi {

// Thread budget from the WSI_THREADS environment variable; 0 or unset means
// hardware concurrency.
std::size_t thread_budget();

// Runs fn(i) for i in [0, n). Work item i always gets the same index
// regardless of the thread count, so any function that writes only to
// slot i of a pre-sized output produces scheduling-independent results.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace wsi

#endif  // WSI_THREADING_HPP_
