#include "taoslite/webhook.hpp"

#include <json.hpp>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <cctype>

namespace taoslite {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

bool is_lower_hex_sha(const std::string& s) {
    return s.size() == 40 && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

}  // namespace

std::string hmac_sha256_hex(std::string_view body, std::string_view secret) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()),
         reinterpret_cast<const unsigned char*>(body.data()), body.size(), digest, &digest_len);
    std::string hex;
    hex.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        hex.push_back(kHexDigits[digest[i] >> 4]);
        hex.push_back(kHexDigits[digest[i] & 0xf]);
    }
    return hex;
}

bool verify_signature(std::string_view body, std::string_view signature_hex,
                      std::string_view secret) {
    if (signature_hex.starts_with("sha256=")) signature_hex.remove_prefix(7);
    std::string expected = hmac_sha256_hex(body, secret);
    if (signature_hex.size() != expected.size()) return false;
    unsigned char diff = 0;
    for (size_t i = 0; i < expected.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(signature_hex[i]);
        diff |= static_cast<unsigned char>(std::tolower(c)) ^
                static_cast<unsigned char>(expected[i]);
    }
    return diff == 0;
}

std::variant<CommitEvent, Ignored> parse_event(const RawWebhook& raw) {
    if (raw.event_kind != "pull_request")
        return Ignored{"event kind '" + raw.event_kind + "'"};
    if (raw.body.empty()) throw WebhookParseError("(body)");

    nlohmann::json payload = nlohmann::json::parse(raw.body, nullptr, false);
    if (payload.is_discarded() || !payload.is_object())
        throw WebhookParseError("(body: not a JSON object)");

    std::string action = payload.value("action", "");
    if (action != "opened" && action != "synchronize" && action != "reopened")
        return Ignored{"pull_request action '" + action + "'"};

    auto require = [&](const nlohmann::json& node, const char* key,
                       const std::string& path) -> const nlohmann::json& {
        if (!node.is_object() || !node.contains(key)) throw WebhookParseError(path);
        return node[key];
    };

    CommitEvent ev;
    const auto& repo = require(payload, "repository", "repository");
    const auto& full_name = require(repo, "full_name", "repository.full_name");
    if (!full_name.is_string()) throw WebhookParseError("repository.full_name");
    ev.repo = full_name.get<std::string>();

    const auto& number = require(payload, "number", "number");
    if (!number.is_number_integer() || number.get<std::int64_t>() < 1)
        throw WebhookParseError("number");
    ev.change_id = number.get<std::int64_t>();

    const auto& pr = require(payload, "pull_request", "pull_request");
    const auto& head = require(pr, "head", "pull_request.head");
    const auto& sha = require(head, "sha", "pull_request.head.sha");
    if (!sha.is_string()) throw WebhookParseError("pull_request.head.sha");
    ev.head_sha = sha.get<std::string>();
    if (!is_lower_hex_sha(ev.head_sha)) throw WebhookParseError("pull_request.head.sha");

    const auto& head_ref = require(head, "ref", "pull_request.head.ref");
    if (!head_ref.is_string()) throw WebhookParseError("pull_request.head.ref");
    ev.source_ref = head_ref.get<std::string>();

    const auto& base = require(pr, "base", "pull_request.base");
    const auto& base_ref = require(base, "ref", "pull_request.base.ref");
    if (!base_ref.is_string()) throw WebhookParseError("pull_request.base.ref");
    ev.target_ref = base_ref.get<std::string>();

    const auto& user = require(pr, "user", "pull_request.user");
    const auto& login = require(user, "login", "pull_request.user.login");
    if (!login.is_string()) throw WebhookParseError("pull_request.user.login");
    ev.author = login.get<std::string>();

    ev.received_at = Clock::now();
    return ev;
}

}  // namespace taoslite
