// Copyright (c) 2026 Deflicker Authors. All Rights Reserved.
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

#include "deflicker/core/io_audit.hpp"

#include <atomic>

namespace deflicker {
namespace io_audit {

namespace {
std::atomic<long> g_flow_reads{0};
}

void note_flow_read() { g_flow_reads.fetch_add(1, std::memory_order_relaxed); }
long flow_read_count() { return g_flow_reads.load(std::memory_order_relaxed); }
void reset() { g_flow_reads.store(0, std::memory_order_relaxed); }

}  // namespace io_audit
}  // namespace deflicker
