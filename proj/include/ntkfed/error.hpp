/*
 * Copyright (C) 2026 The ntkfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef NTKFED_ERROR_HPP
#define NTKFED_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ntkfed {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (IDX, weights, CSV).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Configuration failed validation. The message names the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite or exploding values during training or evolution.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace ntkfed

#endif // NTKFED_ERROR_HPP
