#pragma once

#include <stdexcept>
#include <string>

namespace floodlab {

// Every failure raised by the library derives from Error so callers can catch
// one type; the subclasses mirror the failure categories of each module.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class ParameterError : public Error { public: using Error::Error; };
class LabelError : public Error { public: using Error::Error; };
class ScheduleError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class CapacityError : public Error { public: using Error::Error; };
class TrainingError : public Error { public: using Error::Error; };
class AggregationError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };

}  // namespace floodlab
