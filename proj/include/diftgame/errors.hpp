#pragma once

#include <stdexcept>
#include <string>

namespace diftgame {

enum class ErrorKind {
  Parse,           // malformed input bytes
  Validation,      // graph invariant violated; message names the invariant
  NoAttackPath,    // no entry reaches any destination
  CyclicGraph,     // Reject mode hit a cycle; message carries a witness
  PathExplosion,   // more simple paths than the caller's limit
  Disconnected,    // flow network has no source->sink path
  InvalidTheta,    // trap probability above the 1/min{W,r} bound
  NoQualifyingPath,// no attack path crosses exactly one trap node
  InstanceTooLarge,// exhaustive oracle refused the instance
  ConfigMismatch,  // experiment config incompatible with the graph
  IllegalAction,   // game action not in the legal set for the state
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace diftgame
