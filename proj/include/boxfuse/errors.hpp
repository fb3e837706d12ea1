#pragma once

#include <stdexcept>
#include <string>

namespace boxfuse {

// Error taxonomy shared by the library and the CLI. The category maps to the
// process exit code and to the one-line category tag printed on stderr.
class Error : public std::runtime_error {
 public:
  enum class Category { Config, Data, Io };

  Error(Category category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  Category category() const { return category_; }

  const char* category_label() const {
    switch (category_) {
      case Category::Config:
        return "config";
      case Category::Data:
        return "data";
      case Category::Io:
        return "io";
    }
    return "unknown";
  }

  int exit_code() const {
    switch (category_) {
      case Category::Config:
        return 2;
      case Category::Data:
        return 3;
      case Category::Io:
        return 4;
    }
    return 1;
  }

 private:
  Category category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(Category::Config, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(Category::Data, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(Category::Io, message) {}
};

}  // namespace boxfuse
