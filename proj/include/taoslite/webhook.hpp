#pragma once

#include "taoslite/types.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace taoslite {

struct RawWebhook {
    std::string event_kind;  // X-Event-Kind header
    std::string signature;   // X-Signature-256 header, hex (optionally "sha256=" prefixed)
    std::string body;
};

/// Event kinds/actions outside the merge-request lifecycle.
struct Ignored {
    std::string reason;
};

class WebhookParseError : public std::runtime_error {
public:
    explicit WebhookParseError(std::string field_path)
        : std::runtime_error("missing or invalid field: " + field_path),
          field_path_(std::move(field_path)) {}
    const std::string& field_path() const { return field_path_; }

private:
    std::string field_path_;
};

std::string hmac_sha256_hex(std::string_view body, std::string_view secret);

/// Constant-time comparison against the HMAC-SHA256 of `body` under `secret`.
/// Malformed hex yields false, never an exception.
bool verify_signature(std::string_view body, std::string_view signature_hex,
                      std::string_view secret);

/// Total over all inputs: CommitEvent, Ignored, or WebhookParseError.
std::variant<CommitEvent, Ignored> parse_event(const RawWebhook& raw);

}  // namespace taoslite
