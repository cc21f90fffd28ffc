#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace recomed {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when none of the requested medicines are in the model catalog.
class UnknownMedicinesError : public Error {
 public:
  explicit UnknownMedicinesError(std::vector<std::string> names)
      : Error("unknown medicines"), names_(std::move(names)) {}

  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

}  // namespace recomed
