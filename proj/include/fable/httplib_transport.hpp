// Copyright 2026 The Fable Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// cpp-httplib backed Transport. Plain http only unless the including
// translation unit defines CPPHTTPLIB_OPENSSL_SUPPORT and links OpenSSL.

#include <string>

#include <httplib.h>

#include "fable/gateway.hpp"

namespace fable {

class HttplibTransport final : public Transport {
public:
    HttpReply post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                   std::chrono::milliseconds timeout) override {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw Error(ErrorKind::configuration, "endpoint is not a URL: " + url);
        const auto path_begin = url.find('/', scheme_end + 3);
        const auto origin = url.substr(0, path_begin);
        const auto path = path_begin == std::string::npos ? std::string("/") : url.substr(path_begin);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (url.rfind("https://", 0) == 0) {
            throw Error(ErrorKind::configuration, "https endpoints need a build with CPPHTTPLIB_OPENSSL_SUPPORT");
        }
#endif
        httplib::Client client(origin);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        httplib::Headers h;
        std::string content_type = "application/json";
        for (const auto& [k, v] : headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                h.emplace(k, v);
            }
        }
        auto res = client.Post(path, h, body, content_type);
        if (!res) {
            throw Error(ErrorKind::gateway_transient, "request to " + origin + " failed: " + httplib::to_string(res.error()));
        }
        return {res->status, res->body};
    }
};

}  // namespace fable
