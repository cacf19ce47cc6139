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

#include <stdexcept>
#include <string>

namespace deflicker {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define DEFLICKER_ERROR(Name) \
  struct Name : Error {       \
    using Error::Error;       \
  }

DEFLICKER_ERROR(DimensionMismatchError);
DEFLICKER_ERROR(NoFramesError);
DEFLICKER_ERROR(DecodeError);
DEFLICKER_ERROR(ShapeError);
DEFLICKER_ERROR(WindowTooShortError);
DEFLICKER_ERROR(MissingFlowError);
DEFLICKER_ERROR(EmptyMaskError);
DEFLICKER_ERROR(FrameTooSmallError);
DEFLICKER_ERROR(SpecError);
DEFLICKER_ERROR(MissingOutputError);
DEFLICKER_ERROR(NonFiniteLossError);
DEFLICKER_ERROR(IndexError);
DEFLICKER_ERROR(IoError);
DEFLICKER_ERROR(CheckpointError);

#undef DEFLICKER_ERROR

}  // namespace deflicker
