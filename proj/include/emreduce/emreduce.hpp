#ifndef EMREDUCE_EMREDUCE_HPP
#define EMREDUCE_EMREDUCE_HPP

#include "core.hpp"
#include "datasets.hpp"
#include "diagram.hpp"
#include "extraction.hpp"
#include "io.hpp"
#include "quality.hpp"
#include "reduction.hpp"
#include "synth.hpp"
#include "types.hpp"
#include "unmixing.hpp"

#endif
