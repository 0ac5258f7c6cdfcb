#pragma once

#include <stdexcept>
#include <string>

namespace resumevc {

// Every failure surfaced by the library carries a stable kebab-case code
// (e.g. "bad-signature", "nonce-replayed"). Codes are part of the wire
// contract: HTTP services return them verbatim as {code, message}.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string &message)
        : std::runtime_error(message.empty() ? code : code + ": " + message), code_(std::move(code)),
          message_(message) {}

    explicit Error(std::string code) : Error(std::move(code), std::string{}) {}

    const std::string &code() const noexcept { return code_; }
    /// Text without the code prefix.
    const std::string &message() const noexcept { return message_; }

  private:
    std::string code_;
    std::string message_;
};

} // namespace resumevc
