#pragma once

#include <stdexcept>
#include <string>

namespace ncs {

// Violated preconditions and malformed inputs. The CLI maps this to exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

}  // namespace ncs
