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

#pragma once

namespace deflicker {

inline const char* version() { return "0.1.0"; }

// Lightweight I/O audit counters, used by tests to assert that inference
// never touches flow files.
namespace io_audit {
void note_flow_read();
long flow_read_count();
void reset();
}  // namespace io_audit

}  // namespace deflicker
