// Copyright (C) 2026 The oir Authors
// SPDX-License-Identifier: Apache-2.0

#include "oir/error.hpp"

namespace oir {

namespace {

std::string compose(ErrorKind kind, const std::string& stage, const std::string& message) {
    std::string out;
    if (!stage.empty()) {
        out += "[" + stage + "] ";
    }
    out += std::string(to_string(kind)) + " error: " + message;
    return out;
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::index: return "index";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::validation: return "validation";
        case ErrorKind::substitution: return "substitution";
        case ErrorKind::ambiguity: return "ambiguity";
        case ErrorKind::scorer: return "scorer";
        case ErrorKind::backend: return "backend";
        case ErrorKind::protocol: return "protocol";
        case ErrorKind::connection: return "connection";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::string stage)
    : std::runtime_error(compose(kind, stage, message)),
      m_kind(kind),
      m_stage(std::move(stage)),
      m_detail(message) {}

Error Error::with_stage(std::string stage) const {
    if (!m_stage.empty()) {
        return *this;
    }
    return Error(m_kind, m_detail, std::move(stage));
}

void throw_error(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::backend:
        case ErrorKind::protocol:
        case ErrorKind::connection:
            return 3;
        case ErrorKind::numeric:
            return 4;
        default:
            return 2;
    }
}

}  // namespace oir
