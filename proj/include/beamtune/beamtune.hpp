#pragma once

#include "beamtune/config.hpp"
#include "beamtune/harness/agent.hpp"
#include "beamtune/harness/episode.hpp"
#include "beamtune/harness/evaluate.hpp"
#include "beamtune/harness/factory.hpp"
#include "beamtune/harness/metrics.hpp"
#include "beamtune/harness/report.hpp"
#include "beamtune/llm/chat.hpp"
#include "beamtune/llm/http_backend.hpp"
#include "beamtune/optics.hpp"
#include "beamtune/optimizers.hpp"
#include "beamtune/prompts/parse.hpp"
#include "beamtune/prompts/render.hpp"
#include "beamtune/prompts/templates.hpp"
#include "beamtune/random.hpp"
#include "beamtune/task.hpp"
#include "beamtune/units.hpp"
