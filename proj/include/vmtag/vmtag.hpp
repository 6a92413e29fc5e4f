#pragma once

#include "vmtag/annotator.hpp"
#include "vmtag/cfg.hpp"
#include "vmtag/detector.hpp"
#include "vmtag/error.hpp"
#include "vmtag/ir.hpp"
#include "vmtag/matrix.hpp"
#include "vmtag/parser.hpp"
#include "vmtag/printer.hpp"
#include "vmtag/report.hpp"
#include "vmtag/synth.hpp"
