// Copyright 2026 The histoexpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "histoexpr/error.hpp"

namespace histoexpr {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InsufficientTissue: return "InsufficientTissue";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::ImageDecode: return "ImageDecode";
    case ErrorCode::NegativeExpression: return "NegativeExpression";
    case ErrorCode::MissingGene: return "MissingGene";
    case ErrorCode::DuplicatePatient: return "DuplicatePatient";
    case ErrorCode::DuplicateGene: return "DuplicateGene";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyFeatureSet: return "EmptyFeatureSet";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::FeatureTooShort: return "FeatureTooShort";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DatasetTooSmall: return "DatasetTooSmall";
    case ErrorCode::PanelMismatch: return "PanelMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::ConstantTruth: return "ConstantTruth";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::AllEqual: return "AllEqual";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::NoEvents: return "NoEvents";
    case ErrorCode::ConstantCovariate: return "ConstantCovariate";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NoComparablePairs: return "NoComparablePairs";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::MissingSubtype: return "MissingSubtype";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

}  // namespace histoexpr
