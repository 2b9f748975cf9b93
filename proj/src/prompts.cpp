// SPDX-License-Identifier: Apache-2.0
#include <agc/error.hpp>
#include <agc/prompts.hpp>

#include <fmt/core.h>

namespace agc::prompts
{

std::string render(std::string_view tmpl, std::initializer_list<std::pair<std::string_view, std::string_view>> values)
{
    auto out = std::string {};
    out.reserve(tmpl.size() * 2);
    auto pos = std::size_t { 0 };
    while (pos < tmpl.size())
    {
        auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos)
        {
            out.append(tmpl.substr(pos));
            break;
        }
        auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos)
        {
            out.append(tmpl.substr(pos));
            break;
        }
        out.append(tmpl.substr(pos, open - pos));
        auto const name = tmpl.substr(open + 2, close - open - 2);
        auto replaced = false;
        for (auto const& [key, value]: values)
        {
            if (key == name)
            {
                out.append(value);
                replaced = true;
                break;
            }
        }
        if (!replaced)
            out.append(tmpl.substr(open, close + 2 - open));
        pos = close + 2;
    }
    return out;
}

nlohmann::json parse_object_reply(std::string_view reply)
{
    auto const open = reply.find('{');
    auto const close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw ParseError("reply contains no JSON object");
    try
    {
        auto doc = nlohmann::json::parse(reply.substr(open, close - open + 1));
        if (!doc.is_object())
            throw ParseError("reply is not a JSON object");
        return doc;
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ParseError(fmt::format("reply is not valid JSON: {}", e.what()));
    }
}

} // namespace agc::prompts
