#include "pdmesh/geometry.hpp"

#include <stdexcept>
#include <string>

namespace pdmesh {

std::string_view to_string(SiteClass c)
{
    switch (c) {
    case SiteClass::SampleNeg: return "SampleNeg";
    case SiteClass::SamplePos: return "SamplePos";
    case SiteClass::ProjOfNeg: return "ProjOfNeg";
    case SiteClass::ProjOfPos: return "ProjOfPos";
    }
    return "?";
}

SiteClass site_class_from_string(std::string_view s)
{
    for (auto c : {SiteClass::SampleNeg, SiteClass::SamplePos, SiteClass::ProjOfNeg, SiteClass::ProjOfPos}) {
        if (to_string(c) == s) {
            return c;
        }
    }
    throw std::invalid_argument("unknown site class: " + std::string(s));
}

} // namespace pdmesh
