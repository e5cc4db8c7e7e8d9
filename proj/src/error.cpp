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

#include "empath/error.hpp"

namespace empath {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedContainer: return "MalformedContainer";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::EmptyClip: return "EmptyClip";
    case ErrorCode::NonPowerOfTwoSize: return "NonPowerOfTwoSize";
    case ErrorCode::TooFewBins: return "TooFewBins";
    case ErrorCode::SampleRateMismatch: return "SampleRateMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OddSpatialDim: return "OddSpatialDim";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::MalformedCheckpoint: return "MalformedCheckpoint";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidEmotion: return "InvalidEmotion";
    case ErrorCode::InvalidLanguage: return "InvalidLanguage";
    case ErrorCode::InconsistentDimension: return "InconsistentDimension";
    case ErrorCode::DuplicateToken: return "DuplicateToken";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::EmptyTokenSequence: return "EmptyTokenSequence";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::ModelNotLoaded: return "ModelNotLoaded";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace empath
