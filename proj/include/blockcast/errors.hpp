#pragma once

#include <stdexcept>
#include <string>

namespace blockcast {

/// Base class for all library failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Classifies why a datagram could not be decoded.
enum class DecodeErrorKind {
  ShortBuffer,     // fewer bytes than the fixed header needs
  BadVersion,      // version bits != 1
  UnknownCode,     // code octet not one of the three used by this protocol
  LengthMismatch,  // body length inconsistent with the message kind
  BadField,        // a field value violates its invariant
};

class DecodeError : public Error {
 public:
  DecodeError(DecodeErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  DecodeErrorKind kind() const { return kind_; }

 private:
  DecodeErrorKind kind_;
};

}  // namespace blockcast
