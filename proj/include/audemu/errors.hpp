// errors.hpp: exception taxonomy for the audemu library.
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

namespace audemu {

// Base class of every exception thrown by audemu.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define AUDEMU_DEFINE_ERROR(NAME)                            \
  class NAME : public Error {                                \
   public:                                                   \
    explicit NAME(const std::string& what) : Error(what) {}  \
  }

AUDEMU_DEFINE_ERROR(SilentInput);
AUDEMU_DEFINE_ERROR(InputTooShort);
AUDEMU_DEFINE_ERROR(MismatchedLengths);
AUDEMU_DEFINE_ERROR(UnknownTemplate);
AUDEMU_DEFINE_ERROR(RateMismatch);
AUDEMU_DEFINE_ERROR(NotInCorpus);
AUDEMU_DEFINE_ERROR(EmptyLevelSet);
AUDEMU_DEFINE_ERROR(DegenerateChannel);
AUDEMU_DEFINE_ERROR(NonPositiveEntry);
AUDEMU_DEFINE_ERROR(ShapeMismatch);
AUDEMU_DEFINE_ERROR(ChannelMismatch);
AUDEMU_DEFINE_ERROR(BadLength);
AUDEMU_DEFINE_ERROR(NoForwardCache);
AUDEMU_DEFINE_ERROR(DivergenceDetected);
AUDEMU_DEFINE_ERROR(ConfigMismatch);
AUDEMU_DEFINE_ERROR(CorpusOverlap);
AUDEMU_DEFINE_ERROR(AxisMismatch);
AUDEMU_DEFINE_ERROR(NyquistViolation);
AUDEMU_DEFINE_ERROR(SilentTargetChannel);
AUDEMU_DEFINE_ERROR(IoError);
AUDEMU_DEFINE_ERROR(BadConfig);
AUDEMU_DEFINE_ERROR(InvalidArgument);

#undef AUDEMU_DEFINE_ERROR

}  // namespace audemu
