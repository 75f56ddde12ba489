#pragma once

#include <cstdio>
#include <string>
#include <string_view>

namespace eqlab {

// RFC-4180 field: quoted only when it holds a comma, quote, CR or LF.
inline std::string csv_field(std::string_view s)
{
    if(s.find_first_of(",\"\r\n") == std::string_view::npos)
        return std::string(s);
    std::string out = "\"";
    for(char ch : s) {
        if(ch == '"')
            out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

// Round-trip decimal form with a '.' separator.
inline std::string csv_double(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace eqlab
