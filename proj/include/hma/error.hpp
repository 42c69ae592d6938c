#pragma once

#include <stdexcept>
#include <string>

namespace hma {

// Base for all recoverable errors raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define HMA_DEFINE_ERROR(Name)                                                 \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {}         \
  }

HMA_DEFINE_ERROR(NonPositiveDepth);
HMA_DEFINE_ERROR(InvalidLimits);
HMA_DEFINE_ERROR(DegenerateInput);
HMA_DEFINE_ERROR(NoConsensus);
HMA_DEFINE_ERROR(EmptyCluster);
HMA_DEFINE_ERROR(EmptyImage);
HMA_DEFINE_ERROR(EmptyClass);
HMA_DEFINE_ERROR(UntrainedModel);
HMA_DEFINE_ERROR(WrongShape);
HMA_DEFINE_ERROR(EmptyTestSet);
HMA_DEFINE_ERROR(SignalTooShort);
HMA_DEFINE_ERROR(BadFrameSize);
HMA_DEFINE_ERROR(NoFrames);
HMA_DEFINE_ERROR(NotHermitian);
HMA_DEFINE_ERROR(TooManySources);
HMA_DEFINE_ERROR(EmptyBand);
HMA_DEFINE_ERROR(SilentInput);
HMA_DEFINE_ERROR(InvalidSpec);
HMA_DEFINE_ERROR(ParseError);
HMA_DEFINE_ERROR(IoError);

#undef HMA_DEFINE_ERROR

// Wraps a stage failure inside the composed pipeline so callers can see
// which stage failed.
class StageError : public Error {
public:
  StageError(const std::string& stage, const std::string& msg)
      : Error("stage '" + stage + "': " + msg), stage_(stage) {}
  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

}  // namespace hma
