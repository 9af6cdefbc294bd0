// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oir {

enum class ErrorKind {
    parameter,
    index,
    numeric,
    validation,
    substitution,
    ambiguity,
    scorer,
    backend,
    protocol,
    connection,
    io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the engine. The kind drives CLI exit codes;
/// the stage names the pipeline stage that raised it, when known.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string stage = {});

    ErrorKind kind() const noexcept { return m_kind; }
    const std::string& stage() const noexcept { return m_stage; }
    const std::string& detail() const noexcept { return m_detail; }

    /// Copy of this error tagged with a stage. An existing tag is kept.
    Error with_stage(std::string stage) const;

private:
    ErrorKind m_kind;
    std::string m_stage;
    std::string m_detail;
};

[[noreturn]] void throw_error(ErrorKind kind, const std::string& message);

/// Exit code convention of the `oir` tool: 2 validation, 3 backend/protocol, 4 numeric.
int exit_code_for(ErrorKind kind);

}  // namespace oir
