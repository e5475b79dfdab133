#pragma once

#include <string>
#include <string_view>

namespace etr {

/// "scheme://host[:port]" plus an optional path prefix, split from a base URL.
struct HttpEndpoint {
    std::string origin;
    std::string prefix;  // no trailing '/'
};

/// Throws ConfigError for URLs without an http/https scheme.
HttpEndpoint parse_endpoint(std::string_view url);

/// Joins prefix and an absolute route, skipping a duplicated "/v1".
std::string join_route(const HttpEndpoint& ep, std::string_view route);

}  // namespace etr
