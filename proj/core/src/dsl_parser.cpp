// Copyright 2026 The dymolab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Recursive-descent parser for the call grammar. Hand-rolled rather than a
// generic JSON reader so duplicate arguments and non-scalar literals are
// reported with positions instead of being silently normalized.

#include <cctype>
#include <charconv>

#include "dymo/dsl.hpp"

namespace dymo::dsl {

namespace {

struct Cursor {
    const std::string& text;
    std::size_t pos = 0;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    void skip_ws() {
        while (!done() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' ||
                           text[pos] == '\r')) {
            ++pos;
        }
    }

    bool consume(char c) {
        if (!done() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
};

struct Fail {
    std::size_t pos;
    std::string reason;
};

using StrResult = std::variant<std::string, Fail>;
using LitResult = std::variant<Literal, Fail>;

StrResult parse_string(Cursor& c) {
    std::size_t start = c.pos;
    if (!c.consume('"')) return Fail{start, "expected '\"'"};
    std::string out;
    while (!c.done()) {
        char ch = c.text[c.pos++];
        if (ch == '"') return out;
        if (ch == '\\') {
            if (c.done()) break;
            char esc = c.text[c.pos++];
            switch (esc) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case '/': out += '/'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                default:
                    return Fail{c.pos - 1, std::string("unsupported escape '\\") + esc + "'"};
            }
        } else {
            out += ch;
        }
    }
    return Fail{start, "unterminated string"};
}

LitResult parse_literal(Cursor& c) {
    c.skip_ws();
    if (c.done()) return Fail{c.pos, "expected a literal"};
    char ch = c.peek();
    if (ch == '"') {
        auto s = parse_string(c);
        if (std::holds_alternative<Fail>(s)) return std::get<Fail>(s);
        return Literal{std::get<std::string>(s)};
    }
    if (ch == 't' || ch == 'f') {
        if (c.text.compare(c.pos, 4, "true") == 0) {
            c.pos += 4;
            return Literal{true};
        }
        if (c.text.compare(c.pos, 5, "false") == 0) {
            c.pos += 5;
            return Literal{false};
        }
        return Fail{c.pos, "malformed literal"};
    }
    if (ch == '-' || std::isdigit(static_cast<unsigned char>(ch))) {
        std::size_t start = c.pos;
        if (ch == '-') ++c.pos;
        while (!c.done() && std::isdigit(static_cast<unsigned char>(c.peek()))) ++c.pos;
        if (c.pos == start + (ch == '-' ? 1u : 0u)) return Fail{start, "malformed literal"};
        if (!c.done() && (c.peek() == '.' || c.peek() == 'e' || c.peek() == 'E')) {
            return Fail{start, "malformed literal: floats are not part of the call grammar"};
        }
        int64_t value = 0;
        auto [ptr, ec] = std::from_chars(c.text.data() + start, c.text.data() + c.pos, value);
        if (ec != std::errc() || ptr != c.text.data() + c.pos) {
            return Fail{start, "malformed literal: integer out of range"};
        }
        return Literal{value};
    }
    return Fail{c.pos, "malformed literal: expected string, integer or boolean"};
}

}  // namespace

ParseResult parse_completion(const std::string& text, const Registry& registry) {
    std::size_t brace = text.find('{');
    if (brace == std::string::npos) return NoCall{};

    Cursor c{text, brace};
    c.consume('{');
    c.skip_ws();

    auto tool_name = parse_string(c);
    if (std::holds_alternative<Fail>(tool_name)) {
        auto f = std::get<Fail>(tool_name);
        return ParseError{ParseErrorKind::Syntax, f.pos, "expected a quoted tool name: " + f.reason};
    }
    const std::string& tool = std::get<std::string>(tool_name);

    c.skip_ws();
    if (!c.consume(':')) return ParseError{ParseErrorKind::Syntax, c.pos, "expected ':' after tool name"};
    c.skip_ws();
    if (!c.consume('{')) return ParseError{ParseErrorKind::Syntax, c.pos, "expected '{' opening the argument object"};

    FunctionCall call;
    call.tool = tool;

    c.skip_ws();
    if (!c.consume('}')) {
        for (;;) {
            c.skip_ws();
            auto arg_name = parse_string(c);
            if (std::holds_alternative<Fail>(arg_name)) {
                auto f = std::get<Fail>(arg_name);
                return ParseError{ParseErrorKind::Syntax, f.pos, "expected a quoted argument name: " + f.reason};
            }
            const std::string& name = std::get<std::string>(arg_name);
            c.skip_ws();
            if (!c.consume(':')) return ParseError{ParseErrorKind::Syntax, c.pos, "expected ':' after argument name"};
            auto value = parse_literal(c);
            if (std::holds_alternative<Fail>(value)) {
                auto f = std::get<Fail>(value);
                return ParseError{ParseErrorKind::BadLiteral, f.pos, f.reason};
            }
            if (call.args.count(name) != 0) {
                return ParseError{ParseErrorKind::DuplicateArg, c.pos,
                                  "duplicate argument '" + name + "'"};
            }
            call.args.emplace(name, std::get<Literal>(value));
            c.skip_ws();
            if (c.consume(',')) continue;
            if (c.consume('}')) break;
            return ParseError{ParseErrorKind::Syntax, c.pos, "expected ',' or '}' in argument object"};
        }
    }

    c.skip_ws();
    if (!c.consume('}')) return ParseError{ParseErrorKind::Syntax, c.pos, "expected '}' closing the call object"};

    // Exactly one call per completion: any further '{' after the object is a
    // second call attempt, not trailing prose we can ignore safely.
    if (text.find('{', c.pos) != std::string::npos) {
        return ParseError{ParseErrorKind::Syntax, text.find('{', c.pos), "multiple call objects in one completion"};
    }

    if (find_tool(registry, tool) == nullptr) {
        return ParseError{ParseErrorKind::UnknownTool, brace, "unknown tool '" + tool + "'"};
    }
    return call;
}

}  // namespace dymo::dsl
