/* Copyright 2026 The Empath Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace empath {

// Every failure the library reports carries one of these codes. Names follow
// the error vocabulary of the public operations.
enum class ErrorCode {
  // audio-io
  MalformedContainer,
  UnsupportedEncoding,
  EmptyClip,
  // dsp-features
  NonPowerOfTwoSize,
  TooFewBins,
  SampleRateMismatch,
  InvalidConfig,
  // nn-core
  ShapeMismatch,
  OddSpatialDim,
  LabelOutOfRange,
  EmptySequence,
  IndexOutOfRange,
  MalformedCheckpoint,
  // ser-model
  EmptyDataset,
  // recommender
  ParseError,
  DuplicateId,
  InvalidEmotion,
  InvalidLanguage,
  InconsistentDimension,
  DuplicateToken,
  EmptyFile,
  EmptyTokenSequence,
  EmptyCorpus,
  InsufficientCandidates,
  // tts-client
  BackendUnreachable,
  BackendError,
  Timeout,
  MalformedResponse,
  // pipeline-service
  DecodeError,
  ModelNotLoaded,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace empath
