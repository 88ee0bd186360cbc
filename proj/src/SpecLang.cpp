// Copyright (c) 2026 The capi authors
// SPDX-License-Identifier: Apache-2.0

#include "capi/SpecLang.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "capi/Errors.hpp"

namespace capi {

namespace {

// ---------------------------------------------------------------------------
// Lexer

struct Token {
    enum class Kind { Ident, String, Int, LParen, RParen, Comma, Equals, Ref, Universe, Import, End };
    Kind kind;
    std::string text;
    int64_t number = 0;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    Lexer(std::string_view source, const std::string& sourceName)
        : source_(source), sourceName_(sourceName) {}

    std::vector<Token> run() {
        std::vector<Token> tokens;
        while (true) {
            skipTrivia();
            if (atEnd()) {
                tokens.push_back(make(Token::Kind::End));
                return tokens;
            }
            tokens.push_back(next());
        }
    }

private:
    bool atEnd() const { return pos_ >= source_.size(); }
    char peek() const { return source_[pos_]; }

    char advance() {
        char c = source_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        return c;
    }

    void skipTrivia() {
        while (!atEnd()) {
            char c = peek();
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '#') {
                while (!atEnd() && peek() != '\n') {
                    advance();
                }
            } else {
                return;
            }
        }
    }

    Token make(Token::Kind kind, std::string text = {}) const {
        return Token{kind, std::move(text), 0, tokenLine_, tokenColumn_};
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw ParseError(sourceName_, tokenLine_, tokenColumn_, message);
    }

    std::string lexIdent() {
        std::string text;
        while (!atEnd() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
            text.push_back(advance());
        }
        return text;
    }

    Token next() {
        tokenLine_ = line_;
        tokenColumn_ = column_;
        char c = peek();
        if (c == '(') { advance(); return make(Token::Kind::LParen); }
        if (c == ')') { advance(); return make(Token::Kind::RParen); }
        if (c == ',') { advance(); return make(Token::Kind::Comma); }
        if (c == '=') { advance(); return make(Token::Kind::Equals); }
        if (c == '%') {
            advance();
            if (!atEnd() && peek() == '%') {
                advance();
                return make(Token::Kind::Universe);
            }
            if (atEnd() || (!std::isalpha(static_cast<unsigned char>(peek())) && peek() != '_')) {
                fail("expected instance name or '%' after '%'");
            }
            return make(Token::Kind::Ref, lexIdent());
        }
        if (c == '!') {
            advance();
            std::string word = lexIdent();
            if (word != "import") {
                fail("expected 'import' after '!'");
            }
            return make(Token::Kind::Import);
        }
        if (c == '"') {
            advance();
            std::string text;
            while (true) {
                if (atEnd() || peek() == '\n') {
                    fail("unterminated string literal");
                }
                char ch = advance();
                if (ch == '"') {
                    break;
                }
                if (ch == '\\') {
                    if (atEnd()) {
                        fail("unterminated string literal");
                    }
                    char esc = advance();
                    if (esc == '"' || esc == '\\') {
                        text.push_back(esc);
                    } else {
                        fail(std::string("unknown escape '\\") + esc + "'");
                    }
                } else {
                    text.push_back(ch);
                }
            }
            return make(Token::Kind::String, std::move(text));
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string digits;
            while (!atEnd() && std::isdigit(static_cast<unsigned char>(peek()))) {
                digits.push_back(advance());
            }
            Token token = make(Token::Kind::Int, digits);
            try {
                token.number = std::stoll(digits);
            } catch (const std::out_of_range&) {
                fail("integer literal out of range");
            }
            return token;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            return make(Token::Kind::Ident, lexIdent());
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string_view source_;
    std::string sourceName_;
    size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
    int tokenLine_ = 1;
    int tokenColumn_ = 1;
};

// ---------------------------------------------------------------------------
// Selector signatures

enum class ArgType { Selector, String, Int, Compare };

struct Signature {
    std::vector<ArgType> params;
    size_t minArgs;
    size_t maxArgs; // SIZE_MAX: variadic, extra args typed as the last param
};

const std::map<std::string, std::pair<SelectorKind, Signature>>& signatureTable() {
    static const std::map<std::string, std::pair<SelectorKind, Signature>> table = {
        {"join", {SelectorKind::Join, {{ArgType::Selector}, 1, SIZE_MAX}}},
        {"subtract", {SelectorKind::Subtract, {{ArgType::Selector, ArgType::Selector}, 2, 2}}},
        {"inSystemHeader", {SelectorKind::InSystemHeader, {{ArgType::Selector}, 1, 1}}},
        {"inlineSpecified", {SelectorKind::InlineSpecified, {{ArgType::Selector}, 1, 1}}},
        {"flops", {SelectorKind::Flops, {{ArgType::Compare, ArgType::Int, ArgType::Selector}, 3, 3}}},
        {"loopDepth", {SelectorKind::LoopDepth, {{ArgType::Compare, ArgType::Int, ArgType::Selector}, 3, 3}}},
        {"byName", {SelectorKind::ByName, {{ArgType::String, ArgType::Selector}, 2, 2}}},
        {"onCallPathTo", {SelectorKind::OnCallPathTo, {{ArgType::Selector, ArgType::Selector}, 2, 2}}},
        {"coarse", {SelectorKind::Coarse, {{ArgType::Selector, ArgType::Selector}, 1, 2}}},
    };
    return table;
}

const std::set<std::string> kCompareOps = {">=", "<=", ">", "<", "=="};

// ---------------------------------------------------------------------------
// Parser

struct BuildState {
    SelectorPipeline pipeline;
    std::map<std::string, size_t> byName;
    std::set<std::string> finishedImports;
    std::vector<std::string> importStack;
};

class Parser {
public:
    Parser(std::string_view source, const std::string& sourceName, const ImportResolver& resolver,
           BuildState& state, std::optional<std::string> importedFrom)
        : tokens_(Lexer(source, sourceName).run()), sourceName_(sourceName), resolver_(resolver),
          state_(state), importedFrom_(std::move(importedFrom)) {}

    void run() {
        while (!at(Token::Kind::End)) {
            statement();
        }
    }

private:
    const Token& peek(size_t ahead = 0) const {
        size_t index = std::min(pos_ + ahead, tokens_.size() - 1);
        return tokens_[index];
    }

    bool at(Token::Kind kind) const { return peek().kind == kind; }

    Token expect(Token::Kind kind, const std::string& what) {
        if (!at(kind)) {
            fail(peek(), "expected " + what);
        }
        return tokens_[pos_++];
    }

    [[noreturn]] void fail(const Token& token, const std::string& message) const {
        throw ParseError(sourceName_, token.line, token.column, message);
    }

    void statement() {
        if (at(Token::Kind::Import)) {
            importDirective();
            return;
        }
        if (at(Token::Kind::Ident) && peek(1).kind == Token::Kind::Equals) {
            Token nameTok = tokens_[pos_];
            pos_ += 2;
            if (state_.byName.count(nameTok.text) != 0) {
                fail(nameTok, "duplicate instance name \"" + nameTok.text + "\"");
            }
            size_t index = instanceExpr(nameTok.text);
            state_.byName.emplace(nameTok.text, index);
            return;
        }
        instanceExpr(std::nullopt);
    }

    void importDirective() {
        Token directive = expect(Token::Kind::Import, "'!import'");
        expect(Token::Kind::LParen, "'(' after !import");
        Token nameTok = expect(Token::Kind::String, "module name string");
        expect(Token::Kind::RParen, "')'");
        if (!resolver_) {
            fail(directive, "no import resolver available for \"" + nameTok.text + "\"");
        }
        auto module = resolver_(nameTok.text);
        if (!module) {
            fail(directive, "cannot resolve import \"" + nameTok.text + "\"");
        }
        for (const auto& active : state_.importStack) {
            if (active == module->key) {
                fail(directive, "import cycle through \"" + nameTok.text + "\"");
            }
        }
        if (state_.finishedImports.count(module->key) != 0) {
            return; // re-import is idempotent
        }
        state_.importStack.push_back(module->key);
        const ImportResolver& sub = module->subResolver ? module->subResolver : resolver_;
        Parser inner(module->text, nameTok.text, sub, state_, nameTok.text);
        inner.run();
        state_.importStack.pop_back();
        state_.finishedImports.insert(module->key);
    }

    /// Parses a statement-level expression into an instance of its own.
    size_t instanceExpr(std::optional<std::string> name) {
        const Token& token = peek();
        switch (token.kind) {
        case Token::Kind::Ident:
            return call(std::move(name));
        case Token::Kind::Universe:
            ++pos_;
            return appendInstance({std::move(name), SelectorKind::Universe, {}, std::nullopt, importedFrom_});
        case Token::Kind::Ref: {
            ++pos_;
            return appendInstance({std::move(name), SelectorKind::Alias,
                                   {Argument::ref(resolveRef(token))}, std::nullopt, importedFrom_});
        }
        default:
            fail(token, "expected a selector expression");
        }
    }

    size_t resolveRef(const Token& token) const {
        auto it = state_.byName.find(token.text);
        if (it == state_.byName.end()) {
            fail(token, "undefined reference '%" + token.text + "'");
        }
        return it->second;
    }

    size_t call(std::optional<std::string> name) {
        Token kindTok = expect(Token::Kind::Ident, "selector kind");
        auto sig = signatureTable().find(kindTok.text);
        if (sig == signatureTable().end()) {
            fail(kindTok, "unknown selector kind \"" + kindTok.text + "\"");
        }
        const auto& [kind, signature] = sig->second;
        expect(Token::Kind::LParen, "'(' after selector kind");

        std::vector<Argument> args;
        std::vector<size_t> hoisted; // nested anonymous instances, to re-parent
        std::vector<Token> argTokens;
        if (!at(Token::Kind::RParen)) {
            while (true) {
                argTokens.push_back(peek());
                args.push_back(argument(hoisted));
                if (at(Token::Kind::Comma)) {
                    ++pos_;
                    continue;
                }
                break;
            }
        }
        expect(Token::Kind::RParen, "')' or ','");

        if (args.size() < signature.minArgs ||
            (signature.maxArgs != SIZE_MAX && args.size() > signature.maxArgs)) {
            std::string expected = signature.maxArgs == SIZE_MAX
                                       ? "at least " + std::to_string(signature.minArgs)
                                       : signature.minArgs == signature.maxArgs
                                             ? "exactly " + std::to_string(signature.minArgs)
                                             : std::to_string(signature.minArgs) + " to " +
                                                   std::to_string(signature.maxArgs);
            fail(kindTok, kindTok.text + " expects " + expected + " argument(s), got " +
                              std::to_string(args.size()));
        }
        for (size_t i = 0; i < args.size(); ++i) {
            ArgType slot = signature.params[std::min(i, signature.params.size() - 1)];
            coerce(args[i], slot, kindTok.text, i, argTokens[i]);
        }
        if (kind == SelectorKind::ByName) {
            try {
                std::regex probe(args[0].text);
            } catch (const std::regex_error& e) {
                fail(argTokens[0], "invalid regex \"" + args[0].text + "\": " + e.what());
            }
        }

        size_t index =
            appendInstance({std::move(name), kind, std::move(args), std::nullopt, importedFrom_});
        for (size_t child : hoisted) {
            state_.pipeline.instances[child].hoistParent = index;
        }
        return index;
    }

    Argument argument(std::vector<size_t>& hoisted) {
        const Token& token = peek();
        switch (token.kind) {
        case Token::Kind::String:
            ++pos_;
            return Argument::string(token.text);
        case Token::Kind::Int:
            ++pos_;
            return Argument::integer(token.number);
        case Token::Kind::Universe:
            ++pos_;
            return Argument::universe();
        case Token::Kind::Ref:
            ++pos_;
            return Argument::ref(resolveRef(token));
        case Token::Kind::Ident: {
            // Nested call: becomes an anonymous instance of its own.
            size_t index = call(std::nullopt);
            hoisted.push_back(index);
            return Argument::ref(index);
        }
        default:
            fail(token, "expected an argument");
        }
    }

    void coerce(Argument& arg, ArgType slot, const std::string& kindName, size_t position,
                const Token& token) const {
        auto mismatch = [&](const std::string& expected) {
            fail(token, "argument " + std::to_string(position + 1) + " of " + kindName +
                            ": expected " + expected);
        };
        switch (slot) {
        case ArgType::Selector:
            if (arg.type != Argument::Type::InstanceRef && arg.type != Argument::Type::UniverseRef) {
                mismatch("a selector");
            }
            break;
        case ArgType::String:
            if (arg.type != Argument::Type::String) {
                mismatch("a string");
            }
            break;
        case ArgType::Int:
            if (arg.type != Argument::Type::Int) {
                mismatch("an integer");
            }
            break;
        case ArgType::Compare:
            if (arg.type != Argument::Type::String || kCompareOps.count(arg.text) == 0) {
                mismatch("a comparison operator (\">=\", \"<=\", \">\", \"<\", \"==\")");
            }
            arg.type = Argument::Type::Compare;
            break;
        }
    }

    size_t appendInstance(SelectorInstance instance) {
        state_.pipeline.instances.push_back(std::move(instance));
        return state_.pipeline.instances.size() - 1;
    }

    std::vector<Token> tokens_;
    size_t pos_ = 0;
    std::string sourceName_;
    const ImportResolver& resolver_;
    BuildState& state_;
    std::optional<std::string> importedFrom_;
};

std::string quote(const std::string& text) {
    std::string out = "\"";
    for (char c : text) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string renderExpr(const SelectorPipeline& pipeline, size_t index);

std::string renderArg(const SelectorPipeline& pipeline, const Argument& arg) {
    switch (arg.type) {
    case Argument::Type::String:
        return quote(arg.text);
    case Argument::Type::Compare:
        return "\"" + arg.text + "\"";
    case Argument::Type::Int:
        return std::to_string(arg.number);
    case Argument::Type::UniverseRef:
        return "%%";
    case Argument::Type::InstanceRef: {
        const SelectorInstance& target = pipeline.instances[arg.instance];
        if (target.name) {
            return "%" + *target.name;
        }
        return renderExpr(pipeline, arg.instance); // anonymous: render inline
    }
    }
    return {};
}

std::string renderExpr(const SelectorPipeline& pipeline, size_t index) {
    const SelectorInstance& instance = pipeline.instances[index];
    switch (instance.kind) {
    case SelectorKind::Universe:
        return "%%";
    case SelectorKind::Alias:
        return renderArg(pipeline, instance.args[0]);
    default:
        break;
    }
    std::string out{selectorKindName(instance.kind)};
    out.push_back('(');
    for (size_t i = 0; i < instance.args.size(); ++i) {
        if (i != 0) {
            out += ", ";
        }
        out += renderArg(pipeline, instance.args[i]);
    }
    out.push_back(')');
    return out;
}

} // namespace

std::string_view selectorKindName(SelectorKind kind) {
    switch (kind) {
    case SelectorKind::Universe: return "universe";
    case SelectorKind::Alias: return "alias";
    case SelectorKind::Join: return "join";
    case SelectorKind::Subtract: return "subtract";
    case SelectorKind::InSystemHeader: return "inSystemHeader";
    case SelectorKind::InlineSpecified: return "inlineSpecified";
    case SelectorKind::Flops: return "flops";
    case SelectorKind::LoopDepth: return "loopDepth";
    case SelectorKind::ByName: return "byName";
    case SelectorKind::OnCallPathTo: return "onCallPathTo";
    case SelectorKind::Coarse: return "coarse";
    }
    return "?";
}

size_t SelectorPipeline::entryIndex() const {
    if (instances.empty()) {
        throw Error("no entry instance");
    }
    return instances.size() - 1;
}

const SelectorInstance& SelectorPipeline::entry() const { return instances[entryIndex()]; }

bool SelectorPipeline::isTopLevel(size_t index) const {
    for (std::optional<size_t> parent = instances[index].hoistParent; parent;
         parent = instances[*parent].hoistParent) {
        if (instances[*parent].name) {
            return false;
        }
    }
    return true;
}

std::string SelectorPipeline::displayName(size_t index) const {
    const SelectorInstance& instance = instances[index];
    if (instance.name) {
        return *instance.name;
    }
    return "<" + std::string(selectorKindName(instance.kind)) + "@" + std::to_string(index) + ">";
}

bool SelectorPipeline::structurallyEqual(const SelectorPipeline& other) const {
    if (instances.size() != other.instances.size()) {
        return false;
    }
    for (size_t i = 0; i < instances.size(); ++i) {
        const SelectorInstance& lhs = instances[i];
        const SelectorInstance& rhs = other.instances[i];
        if (lhs.name != rhs.name || lhs.kind != rhs.kind || lhs.args != rhs.args) {
            return false;
        }
    }
    return true;
}

SelectorPipeline parseSpec(std::string_view source, const ImportResolver& resolver,
                           const std::string& sourceName) {
    BuildState state;
    Parser parser(source, sourceName, resolver, state, std::nullopt);
    parser.run();
    if (state.pipeline.instances.empty()) {
        throw ParseError(sourceName + ": no entry instance");
    }
    return std::move(state.pipeline);
}

ImportResolver makeFileImportResolver(std::filesystem::path baseDir) {
    return [baseDir = std::move(baseDir)](const std::string& name) -> std::optional<ImportedModule> {
        std::vector<std::filesystem::path> candidates;
        candidates.push_back(baseDir / name);
        if (const char* searchPath = std::getenv("CAPI_SPEC_PATH")) {
            std::string paths(searchPath);
            size_t start = 0;
            while (start <= paths.size()) {
                size_t end = paths.find(':', start);
                if (end == std::string::npos) {
                    end = paths.size();
                }
                if (end > start) {
                    candidates.emplace_back(std::filesystem::path(paths.substr(start, end - start)) / name);
                }
                start = end + 1;
            }
        }
        for (const auto& candidate : candidates) {
            std::error_code ec;
            if (!std::filesystem::is_regular_file(candidate, ec)) {
                continue;
            }
            std::ifstream in(candidate);
            if (!in) {
                continue;
            }
            std::ostringstream buffer;
            buffer << in.rdbuf();
            auto canonical = std::filesystem::weakly_canonical(candidate, ec);
            ImportedModule module;
            module.key = (ec ? candidate : canonical).string();
            module.text = buffer.str();
            module.subResolver = makeFileImportResolver(candidate.parent_path());
            return module;
        }
        return std::nullopt;
    };
}

SelectorPipeline parseSpecFile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open spec file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parseSpec(buffer.str(), makeFileImportResolver(path.parent_path()), path.string());
}

std::string formatSpec(const SelectorPipeline& pipeline) {
    std::string out;
    for (size_t i = 0; i < pipeline.instances.size(); ++i) {
        const SelectorInstance& instance = pipeline.instances[i];
        if (instance.hoistParent) {
            continue; // rendered inline at its use site
        }
        if (instance.name) {
            out += *instance.name + " = ";
        }
        out += renderExpr(pipeline, i);
        out.push_back('\n');
    }
    return out;
}

} // namespace capi
