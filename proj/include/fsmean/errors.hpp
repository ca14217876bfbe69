#pragma once

#include <stdexcept>
#include <string>

namespace fsmean {

enum class ErrorKind {
  AngleNearPi,
  SingularInput,
  NoConvergence,
  DegenerateSpeed,
  IllConditioned,
  FrameDegenerate,
  RankDeficient,
  FoldTooSmall,
  GridMismatch,
  InvalidArgument,
  Format,
};

const char* to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind. All library failures use it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace fsmean
