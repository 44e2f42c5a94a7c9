#pragma once

#include <stdexcept>
#include <string>

namespace certkit {

// Error taxonomy shared by the library and the CLI. The CLI maps categories
// to process exit codes: usage=2, config=3, io=4, numeric=5.
enum class errc {
    usage,
    config,
    io,
    numeric,
};

class error : public std::runtime_error {
  public:
    error(errc category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    errc category() const noexcept { return category_; }

    int exit_code() const noexcept {
        switch (category_) {
            case errc::usage: return 2;
            case errc::config: return 3;
            case errc::io: return 4;
            case errc::numeric: return 5;
        }
        return 1;
    }

  private:
    errc category_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw error(errc::usage, msg); }
[[noreturn]] inline void fail_config(const std::string& msg) { throw error(errc::config, msg); }
[[noreturn]] inline void fail_io(const std::string& msg) { throw error(errc::io, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw error(errc::numeric, msg); }

}  // namespace certkit
