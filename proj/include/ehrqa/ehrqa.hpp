#pragma once

#include "ehrqa/error.hpp"
#include "ehrqa/text.hpp"
#include "ehrqa/kg.hpp"
#include "ehrqa/schema.hpp"
#include "ehrqa/toy_ehr.hpp"
#include "ehrqa/dsl.hpp"
#include "ehrqa/interp.hpp"
#include "ehrqa/recovery.hpp"
#include "ehrqa/questions.hpp"
#include "ehrqa/synthgen.hpp"
#include "ehrqa/records.hpp"
#include "ehrqa/surrogate.hpp"
#include "ehrqa/uncertainty.hpp"
#include "ehrqa/evalkit.hpp"
