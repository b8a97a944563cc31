#pragma once

#include <stdexcept>
#include <string>

namespace antdt {

// Bad scenario/problem input (caught at load or validation time).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A caller violated a module contract (e.g. a server asking for shards).
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// A shard state transition that the ledger forbids. Always a bug in the
// caller; runs abort on it.
struct IllegalTransition : ProtocolError {
  explicit IllegalTransition(const std::string& what) : ProtocolError(what) {}
};

// A per-node metric report arrived with a timestamp older than one already
// ingested for that node.
struct OutOfOrder : ProtocolError {
  explicit OutOfOrder(const std::string& what) : ProtocolError(what) {}
};

}  // namespace antdt
