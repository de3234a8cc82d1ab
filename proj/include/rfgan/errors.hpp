#pragma once

#include <stdexcept>
#include <string>

namespace rfgan {

enum class Err {
  UnknownLayerCode,
  EmptySpec,
  MissingFinalC,
  NonPositiveIntermediateSize,
  BadRfRange,
  DegenerateResponse,
  IncompatibleGeometry,
  BadImageShape,
  BackendUnavailable,
  EmptyPointSet,
  BadThreshold,
  EmptyRecordList,
  NonFiniteLoss,
  OutOfBoundsGeometry,
  EmptyFolder,
  UndecodableImage,
  DatasetUnavailable,
  EmptyReport,
  BadConfig,
  BadCheckpoint,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

}  // namespace rfgan
