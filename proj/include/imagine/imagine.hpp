#pragma once

#include "imagine/errors.hpp"
#include "imagine/isa.hpp"
#include "imagine/params.hpp"
#include "imagine/assembler.hpp"
#include "imagine/pimcore.hpp"
#include "imagine/tile.hpp"
#include "imagine/system.hpp"
#include "imagine/kernel.hpp"
#include "imagine/perfmodel.hpp"
