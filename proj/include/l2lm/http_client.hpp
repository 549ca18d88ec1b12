#pragma once

// Live completion client: an OpenAI-style chat-completions endpoint.
//
//   L2LM_COMPLETION_URL    endpoint URL (default https://api.openai.com/v1/chat/completions)
//   L2LM_API_KEY           bearer credential (required)
//   L2LM_COMPLETION_MODEL  model name (default gpt-4o-mini)

#include <cstdlib>
#include <string>

#include <httplib.h>
// <resolv.h> defines _res, which collides with Eigen parameter names.
#undef _res

#include "l2lm/synthesis.hpp"

namespace l2lm
{

inline constexpr char const *kCompletionUrlEnv = "L2LM_COMPLETION_URL";
inline constexpr char const *kApiKeyEnv = "L2LM_API_KEY";
inline constexpr char const *kCompletionModelEnv = "L2LM_COMPLETION_MODEL";

struct Endpoint
{
  std::string scheme_host_port; // e.g. "https://api.openai.com" or "http://127.0.0.1:8080"
  std::string path;             // e.g. "/v1/chat/completions"
};

inline Endpoint parse_endpoint(std::string const &url)
{
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw UsageError(cat("endpoint URL '", url, "' has no scheme"));
  auto path_at = url.find('/', scheme_end + 3);
  if (path_at == std::string::npos)
    return {url, "/"};
  return {url.substr(0, path_at), url.substr(path_at)};
}

inline json chat_request_body(std::string const &model, std::string const &prompt)
{
  return json{{"model", model}, {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
}

inline std::string chat_response_text(std::string const &body)
{
  try
  {
    auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  }
  catch (json::exception const &e)
  {
    throw RuntimeError(cat("unexpected completion response: ", e.what()));
  }
}

class HttpCompletionClient : public CompletionClient
{
public:
  HttpCompletionClient(std::string url, std::string api_key, std::string model)
      : endpoint_(parse_endpoint(url)), api_key_(std::move(api_key)), model_(std::move(model))
  {
  }

  static HttpCompletionClient from_environment()
  {
    char const *key = std::getenv(kApiKeyEnv);
    if (key == nullptr || *key == '\0')
      throw UsageError(cat("live completion requires the ", kApiKeyEnv, " environment variable"));
    char const *url = std::getenv(kCompletionUrlEnv);
    char const *model = std::getenv(kCompletionModelEnv);
    return HttpCompletionClient(url && *url ? url : "https://api.openai.com/v1/chat/completions", key,
                                model && *model ? model : "gpt-4o-mini");
  }

  std::string complete(std::string const &prompt) override
  {
    httplib::Client client(endpoint_.scheme_host_port);
    client.set_bearer_token_auth(api_key_);
    client.set_read_timeout(120, 0);
    auto res = client.Post(endpoint_.path, chat_request_body(model_, prompt).dump(), "application/json");
    if (!res)
      throw RuntimeError(cat("request to ", endpoint_.scheme_host_port, " failed: ", httplib::to_string(res.error())));
    if (res->status != 200)
      throw RuntimeError(cat("completion endpoint returned HTTP ", res->status));
    return chat_response_text(res->body);
  }

  Endpoint const &endpoint() const { return endpoint_; }

private:
  Endpoint endpoint_;
  std::string api_key_;
  std::string model_;
};

} // namespace l2lm
