#pragma once

#include <stdexcept>
#include <string>

namespace treeqa {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// tree
struct ParseFailure : Error { using Error::Error; };
struct DecompositionCycle : Error { using Error::Error; };

// backend
struct BackendUnavailable : Error { using Error::Error; };
struct ContextOverflow : Error { using Error::Error; };
struct MalformedResponse : Error { using Error::Error; };
struct CapabilityUnsupported : Error { using Error::Error; };
struct ScriptParseFailure : Error { using Error::Error; };

struct ReplayMiss : Error {
    ReplayMiss(const std::string& msg, std::string digest)
        : Error(msg), prompt_digest(std::move(digest)) {}
    std::string prompt_digest;
};

// retrieval
struct CorpusParseFailure : Error {
    CorpusParseFailure(const std::string& msg, long line) : Error(msg), line_number(line) {}
    long line_number;
};
struct DuplicateId : Error {
    DuplicateId(const std::string& msg, long line) : Error(msg), line_number(line) {}
    long line_number;
};
struct IndexVersionMismatch : Error { using Error::Error; };

// reasoning / eval / cli
struct AllModulesFailed : Error { using Error::Error; };
struct DatasetParseFailure : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace treeqa
