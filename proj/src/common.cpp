#include <algorithm>
#include <cctype>
#include <string>

#include "etr/error.hpp"
#include "etr/http.hpp"
#include "etr/label.hpp"

namespace etr {

std::string_view to_string(Label l) noexcept {
    switch (l) {
        case Label::Yes: return "yes";
        case Label::No: return "no";
        case Label::Unsure: return "unsure";
    }
    return "yes";
}

std::string_view display_name(Label l) noexcept {
    switch (l) {
        case Label::Yes: return "Yes";
        case Label::No: return "No";
        case Label::Unsure: return "Unsure";
    }
    return "Yes";
}

Label parse_label(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "yes") return Label::Yes;
    if (lower == "no") return Label::No;
    if (lower == "unsure") return Label::Unsure;
    throw InputError("unknown label \"" + std::string(text) + "\"");
}

HttpEndpoint parse_endpoint(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw ConfigError("endpoint URL needs an http:// or https:// scheme: " + std::string(url));
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("unsupported URL scheme: " + std::string(scheme));
    }
    const auto path_start = url.find('/', scheme_end + 3);
    HttpEndpoint ep;
    ep.origin = std::string(url.substr(0, path_start));
    if (path_start != std::string_view::npos) {
        ep.prefix = std::string(url.substr(path_start));
        while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
    }
    return ep;
}

std::string join_route(const HttpEndpoint& ep, std::string_view route) {
    std::string r(route);
    if (ep.prefix.size() >= 3 && ep.prefix.compare(ep.prefix.size() - 3, 3, "/v1") == 0 &&
        r.rfind("/v1/", 0) == 0) {
        r.erase(0, 3);
    }
    return ep.prefix + r;
}

}  // namespace etr
